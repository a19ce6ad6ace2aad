fn main() {
    std::process::exit(pursuit_rl::cli::run(std::env::args_os()));
}
