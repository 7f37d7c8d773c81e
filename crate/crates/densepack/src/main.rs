fn main() {
    std::process::exit(densepack::cli::run(std::env::args_os()));
}
