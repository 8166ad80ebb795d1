fn main() {
    std::process::exit(vibronic::specpipe::cli_dispatch(std::env::args_os()));
}
