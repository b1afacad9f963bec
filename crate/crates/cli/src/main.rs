fn main() {
    std::process::exit(volseg_cli::run(std::env::args_os()));
}
