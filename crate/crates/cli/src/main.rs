fn main() {
    std::process::exit(iadof_cli::run(std::env::args_os()));
}
