fn main() {
    std::process::exit(dynsparse_core::cli::run(std::env::args_os()));
}
