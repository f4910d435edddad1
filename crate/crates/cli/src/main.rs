fn main() {
    std::process::exit(flowbox_cli::run(std::env::args_os()));
}
