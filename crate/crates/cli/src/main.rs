fn main() {
    std::process::exit(l12glasso_cli::run_command(std::env::args_os()));
}
