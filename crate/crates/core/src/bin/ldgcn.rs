fn main() {
    std::process::exit(ldgcn::cli::run_command(std::env::args_os()));
}
