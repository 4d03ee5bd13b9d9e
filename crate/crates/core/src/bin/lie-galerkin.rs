fn main() {
    std::process::exit(lie_galerkin::cli::main_with(std::env::args_os()));
}
