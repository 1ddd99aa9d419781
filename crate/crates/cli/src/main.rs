fn main() {
    std::process::exit(spinrel_cli::run(std::env::args_os()));
}
