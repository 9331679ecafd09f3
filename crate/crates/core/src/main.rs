fn main() {
    std::process::exit(orthoplan::cli::run(std::env::args_os()));
}
