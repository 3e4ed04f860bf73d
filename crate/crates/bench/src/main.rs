fn main() {
    env_logger::init();
    std::process::exit(demotamp_bench::cli::run(std::env::args_os()));
}
