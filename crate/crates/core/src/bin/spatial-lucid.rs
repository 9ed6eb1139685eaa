fn main() {
    std::process::exit(spatial_lucid::cli::main_with_args(std::env::args_os()));
}
