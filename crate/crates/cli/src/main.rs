fn main() {
    std::process::exit(step2heat_cli::run(std::env::args_os()));
}
