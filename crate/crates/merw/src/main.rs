fn main() {
    std::process::exit(merw::cli::run(std::env::args_os()));
}
