fn main() {
    std::process::exit(gkcs::cli::main_with_env());
}
