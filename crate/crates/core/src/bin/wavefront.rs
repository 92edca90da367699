fn main() {
    std::process::exit(wavefront::cli::run());
}
