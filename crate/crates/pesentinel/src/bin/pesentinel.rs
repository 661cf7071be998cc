fn main() {
    std::process::exit(pesentinel::cli::run(std::env::args()));
}
