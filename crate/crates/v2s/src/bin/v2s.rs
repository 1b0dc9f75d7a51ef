fn main() {
    std::process::exit(v2s::cli::run());
}
