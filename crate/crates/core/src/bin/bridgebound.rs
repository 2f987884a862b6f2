fn main() {
    std::process::exit(bridgebound::cli::run(std::env::args_os()));
}
