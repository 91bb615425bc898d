fn main() {
    gpfluct::init_thread_pool_from_env();
}
