fn main() {
    std::process::exit(maxmin_ee::cli::run(std::env::args_os()));
}
