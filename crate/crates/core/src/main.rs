fn main() {
    std::process::exit(aerosurf::cli::run(std::env::args_os()));
}
