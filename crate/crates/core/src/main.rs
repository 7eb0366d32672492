fn main() {
    std::process::exit(flowcll::cli::run(std::env::args_os()));
}
