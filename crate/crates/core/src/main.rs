fn main() {
    qclab::cli::configure_threads();
    std::process::exit(qclab::cli::run(std::env::args_os()));
}
