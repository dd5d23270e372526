fn main() {
    std::process::exit(v2v_secrecy::cli::dispatch(std::env::args_os()));
}
