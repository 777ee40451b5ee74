fn main() {
    std::process::exit(matherkit::cli::run(std::env::args()));
}
