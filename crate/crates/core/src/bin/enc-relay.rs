fn main() -> std::process::ExitCode {
    enc_relay::cli::main()
}
