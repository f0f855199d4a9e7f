fn main() {
    std::process::exit(primcodec::cli::main());
}
