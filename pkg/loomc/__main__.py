from loomc.cli import main

raise SystemExit(main())
