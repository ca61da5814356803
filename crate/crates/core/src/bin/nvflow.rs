fn main() {
    std::process::exit(nvflow::cli::run_cli(std::env::args_os()));
}
