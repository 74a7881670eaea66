fn main() {
    std::process::exit(nowcast::cli::run(std::env::args_os()));
}
