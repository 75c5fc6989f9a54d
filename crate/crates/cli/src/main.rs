fn main() {
    std::process::exit(dmmt_cli::run(std::env::args_os()));
}
