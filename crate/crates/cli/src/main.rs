fn main() {
    std::process::exit(ces_cli::dispatch(std::env::args_os()));
}
