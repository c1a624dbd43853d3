fn main() {
    std::process::exit(fermi::cli::run(std::env::args_os()));
}
