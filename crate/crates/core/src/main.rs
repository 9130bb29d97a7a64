fn main() -> std::process::ExitCode {
    beamsynth::cli::main()
}
