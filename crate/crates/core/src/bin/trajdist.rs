fn main() {
    std::process::exit(trajdist::cli::main_from(std::env::args_os()));
}
