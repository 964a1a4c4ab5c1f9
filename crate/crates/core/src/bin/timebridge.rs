fn main() {
    std::process::exit(timebridge::cli::run(std::env::args().collect()));
}
