fn main() {
    std::process::exit(semcomm::cli::run(std::env::args_os()));
}
