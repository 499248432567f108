fn main() {
    std::process::exit(loopsol_cli::main_from_env());
}
