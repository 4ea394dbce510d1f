fn main() {
    std::process::exit(irwa_cli::run(std::env::args_os()));
}
