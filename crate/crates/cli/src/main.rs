fn main() {
    std::process::exit(fpp_cli::run_cli(std::env::args_os()));
}
