fn main() {
    std::process::exit(darkpot_cli::run(std::env::args_os()));
}
