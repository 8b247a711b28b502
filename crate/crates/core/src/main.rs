fn main() {
    std::process::exit(charwnn::cli::run());
}
