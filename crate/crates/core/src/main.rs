fn main() {
    std::process::exit(tileinr::cli::run(std::env::args()));
}
