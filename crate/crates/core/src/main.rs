fn main() {
    std::process::exit(lanczos_switch::cli::cli_main(std::env::args_os()));
}
