fn main() {
    std::process::exit(muntz::cli::run_command(std::env::args_os()));
}
