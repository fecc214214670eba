fn main() {
    std::process::exit(hatelab::cli::run(std::env::args_os()));
}
