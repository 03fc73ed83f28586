package app.io;

// Persists buffers to disk.
public class FileSaver {
    private Log log;

    public FileSaver(Log log) {
        this.log = log;
    }

    /* Writes the buffer out, framed by open/close. */
    public void saveFile(Buffer buf) throws IOException {
        open();
        buf.write("data(fake)");
        close();
    }

    void open() {
        log.trace("open");
    }

    void close() {
        flush();
        log.trace("close");
    }

    int flush() {
        return 0;
    }

    int version() {
        return 3;
    }
}
