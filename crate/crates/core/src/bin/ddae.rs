fn main() {
    std::process::exit(ddae::cli::main_from_env());
}
