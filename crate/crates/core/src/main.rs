fn main() {
    occfield::cli::main()
}
