fn main() {
    std::process::exit(ringphase::cli::run(std::env::args_os()));
}
