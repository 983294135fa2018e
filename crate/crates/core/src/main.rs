fn main() {
    std::process::exit(parabolic_ls::cli::dispatch(std::env::args_os()));
}
