fn main() {
    std::process::exit(sgdecay_cli::run_cli(std::env::args_os()));
}
