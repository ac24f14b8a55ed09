fn main() {
    std::process::exit(lieflow_cli::run(std::env::args_os()));
}
