fn main() {
    // Placeholder entry point; the driver is wired up once the library
    // surface is complete.
    eprintln!("ncfb: not yet wired");
    std::process::exit(3);
}
