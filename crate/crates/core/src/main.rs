fn main() {
    std::process::exit(igrl::cli::dispatch(std::env::args_os()));
}
