fn main() {
    std::process::exit(lattice_cli::cli_main(std::env::args_os()));
}
