fn main() {
    std::process::exit(itecal::cli::run(std::env::args_os()));
}
