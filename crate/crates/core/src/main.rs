fn main() {
    std::process::exit(sdelab::cli::dispatch(std::env::args_os()));
}
