fn main() {
    std::process::exit(hpvem::cli::run(std::env::args_os()));
}
