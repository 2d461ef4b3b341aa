fn main() {
    std::process::exit(tdlocate::cli::run(std::env::args_os()));
}
