fn main() {
    std::process::exit(hippm::cli::run(std::env::args_os()));
}
