fn main() {
    std::process::exit(quasidiff::cli::run(std::env::args_os()));
}
