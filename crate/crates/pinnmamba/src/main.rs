fn main() {
    std::process::exit(pinnmamba::cli::run(std::env::args().skip(1)));
}
