fn main() {
    std::process::exit(jointspar_bench::cli::run(std::env::args_os()));
}
