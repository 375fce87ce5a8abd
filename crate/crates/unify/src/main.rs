fn main() {
    std::process::exit(trek_unify::cli::run(std::env::args_os()));
}
