fn main() {
    std::process::exit(tau2::cli::run(std::env::args_os()));
}
