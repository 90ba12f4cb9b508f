fn main() {
    std::process::exit(radiotrace::cli::run(std::env::args_os()));
}
