fn main() {
    std::process::exit(facetrec::cli::main_with_args(std::env::args_os()));
}
